use super::csv::CsvTable;
use crate::error::{Error, Result};
use crate::kernels::{p_max_at_iteration, r_max_at_iteration};

/// One iteration row: cumulative and incremental maximum VRP per half-width.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    /// 1-based count of filter passes.
    pub iteration: usize,
    pub p_max: Vec<f64>,
    pub r_max: Vec<f64>,
}

/// Maximum cumulative (`p_max_KxK`) and incremental (`r_max_KxK`) VRP for
/// each half-width in `half_widths` and iterations `1..=iterations`.
pub fn emit_tables(half_widths: &[usize], iterations: usize) -> Result<(Vec<TableRow>, CsvTable)> {
    if half_widths.is_empty() {
        return Err(Error::validation("at least one half-width is required"));
    }
    if iterations == 0 {
        return Err(Error::validation("at least one iteration is required"));
    }
    let labels: Vec<String> = half_widths.iter().map(|l| format!("{0}x{0}", 2 * l + 1)).collect();
    let header = std::iter::once("iteration".to_string())
        .chain(labels.iter().map(|s| format!("p_max_{s}")))
        .chain(labels.iter().map(|s| format!("r_max_{s}")));
    let mut csv = CsvTable::new(header);
    csv.meta("version", env!("CARGO_PKG_VERSION"));

    let mut rows = Vec::with_capacity(iterations);
    for m in 1..=iterations {
        let n = m - 1;
        let p_max = half_widths
            .iter()
            .map(|&l| p_max_at_iteration(n, l).map(|p| p.get()))
            .collect::<Result<Vec<_>>>()?;
        let r_max = half_widths
            .iter()
            .map(|&l| r_max_at_iteration(n, l))
            .collect::<Result<Vec<_>>>()?;
        let cells = std::iter::once(m.to_string())
            .chain(p_max.iter().chain(&r_max).map(|v| v.to_string()))
            .collect();
        csv.push_row(cells);
        rows.push(TableRow { iteration: m, p_max, r_max });
    }
    Ok((rows, csv))
}
