//! gnuplot scripts for CSV trajectories.

use std::path::Path;

/// Plots every column after the first against it, one line per column.
pub fn gnuplot_script(csv: &Path, header: &[String], title: &str) -> String {
    let file = csv.display().to_string().replace('\'', "''");
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{}'\n", title.replace('\'', "''")));
    s.push_str(&format!("set xlabel '{}'\n", header.first().map_or("t", String::as_str)));
    s.push_str("set key outside right\n");
    let lines: Vec<String> = header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, name)| {
            let src = if i == 1 { format!("'{file}'") } else { "''".to_string() };
            format!("{src} using 1:{} with lines title '{name}'", i + 1)
        })
        .collect();
    s.push_str(&format!("plot {}\n", lines.join(", \\\n     ")));
    s
}
