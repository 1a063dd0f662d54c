//! Plain-text renderings of curves, regions and recommendations. The CLI
//! writes these to files and the service returns them verbatim, so both
//! produce identical bytes for identical inputs.

use serde::Serialize;

use crate::curve::CsteCurve;
use crate::error::{CsteError, Result};
use crate::itr::{Recommendation, RegionReport};

pub const CURVE_CSV_HEADER: &str = "u,estimate,lower,upper";
pub const RECOMMENDATIONS_CSV_HEADER: &str = "id,score,region,advice";

/// `u,estimate,lower,upper`, one row per grid point. Floats use the shortest
/// representation that round-trips.
pub fn curve_csv(curve: &CsteCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.len() + 1));
    out.push_str(CURVE_CSV_HEADER);
    out.push('\n');
    for j in 0..curve.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            curve.grid[j], curve.estimate[j], curve.lower[j], curve.upper[j]
        ));
    }
    out
}

#[derive(Serialize)]
struct CurvePayload<'a> {
    #[serde(flatten)]
    curve: &'a CsteCurve,
    regions: &'a RegionReport,
}

/// Curve with its region report, as pretty JSON.
pub fn curve_json(curve: &CsteCurve, regions: &RegionReport) -> String {
    to_json(&CurvePayload { curve, regions }).expect("curve serializes")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CsteError::Numerical(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Order used for every recommendation listing: by score, then id.
pub fn sort_recommendations(recs: &mut [Recommendation]) {
    recs.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.subject_id.cmp(&b.subject_id))
    });
}

pub fn recommendations_csv(recs: &[Recommendation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECOMMENDATIONS_CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in recs {
        w.write_record([
            r.subject_id.as_str(),
            &r.score.to_string(),
            r.region.as_str(),
            r.advice.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
