//! Search-space accounting.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Grid points searched by each family of methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpace {
    pub n_h: usize,
    pub n_v: usize,
    pub ad: usize,
    pub pd: usize,
    pub tpd: usize,
}

/// AD = `O_h n_h · O_v n_v`, PD = AD × (S + 1), TPD = `O_h n_h + O_v n_v + S_tpd`.
///
/// For TPD an axis with a single antenna needs no search and contributes zero.
pub fn search_space(n_h: usize, n_v: usize, o: (usize, usize), levels: usize, tpd_levels: usize) -> SearchSpace {
    let (oh, ov) = (if n_h == 1 { 1 } else { o.0 }, if n_v == 1 { 1 } else { o.1 });
    let ad = oh * n_h * ov * n_v;
    let h = if n_h > 1 { oh * n_h } else { 0 };
    let v = if n_v > 1 { ov * n_v } else { 0 };
    SearchSpace { n_h, n_v, ad, pd: ad * (levels + 1), tpd: h + v + tpd_levels }
}

/// Checks the ordering `TPD < AD < PD`, which holds for planar arrays with
/// at least four antennas per side.
pub fn check_ordering(s: &SearchSpace) -> Result<()> {
    if s.tpd < s.ad && s.ad < s.pd {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "expected TPD < AD < PD for {}x{}, got TPD {} AD {} PD {}",
            s.n_h, s.n_v, s.tpd, s.ad, s.pd
        )))
    }
}

/// Plain-text table of search-space sizes.
pub fn complexity_report(rows: &[SearchSpace]) -> String {
    let mut out = format!("{:>6} {:>6} {:>12} {:>14} {:>10} {:>10}\n", "n_h", "n_v", "AD", "PD", "TPD", "TPD/n_h");
    for s in rows {
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>12} {:>14} {:>10} {:>10.3}",
            s.n_h,
            s.n_v,
            s.ad,
            s.pd,
            s.tpd,
            s.tpd as f64 / s.n_h as f64
        );
    }
    out
}
