use super::EvalReport;

pub const CSV_HEADERS: [&str; 5] =
    ["Dataset", "Method", "Success Rate (%)", "Avg Attempts", "Total Exec. Time (h:mm:ss)"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub report: EvalReport,
}

pub fn method_label(erp_enabled: bool) -> String {
    if erp_enabled { "ProofSeek (ERP)".into() } else { "ProofSeek (No ERP)".into() }
}

fn cells(r: &ReportRow) -> [String; 4] {
    [
        r.method.clone(),
        format!("{:.1}", r.report.success_rate),
        format!("{:.2}", r.report.avg_attempts),
        r.report.total_exec_time.clone(),
    ]
}

/// Markdown and CSV renderings. Rows are grouped by dataset in first-seen order.
pub fn format_table(rows: &[ReportRow]) -> (String, String) {
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }

    let mut md = format!("| {} |\n|---|---:|---:|---:|\n", CSV_HEADERS[1..].join(" | "));
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(CSV_HEADERS).expect("in-memory write");
    for d in datasets {
        let group: Vec<&ReportRow> = rows.iter().filter(|r| r.dataset == d).collect();
        let n = group[0].report.n_problems;
        md.push_str(&format!("| **{d} ({n} Problems)** | | | |\n"));
        for r in group {
            let c = cells(r);
            md.push_str(&format!("| {} |\n", c.join(" | ")));
            csv.write_record(std::iter::once(d.to_string()).chain(c)).expect("in-memory write");
        }
    }
    let csv = String::from_utf8(csv.into_inner().expect("in-memory flush")).expect("utf-8 cells");
    (md, csv)
}
