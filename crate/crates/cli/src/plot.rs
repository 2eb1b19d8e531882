//! Minimal gnuplot script emission so CSV outputs plot with one command.

pub fn line_plot_script(csv_file: &str, title: &str, xlabel: &str, columns: &[String]) -> String {
    let mut script = String::new();
    script.push_str("# gnuplot script emitted by lumispec\n");
    script.push_str("set datafile separator comma\n");
    script.push_str(&format!("set title \"{title}\"\n"));
    script.push_str(&format!("set xlabel \"{xlabel}\"\n"));
    script.push_str("set ylabel \"spectral density / shot level\"\n");
    script.push_str("set key outside\n");
    script.push_str("plot ");
    let plots: Vec<String> = columns
        .iter()
        .enumerate()
        .map(|(i, name)| {
            format!("\"{csv_file}\" using 1:{} with lines title \"{name}\"", i + 2)
        })
        .collect();
    script.push_str(&plots.join(", \\\n     "));
    script.push('\n');
    script
}

pub fn logx_plot_script(csv_file: &str, title: &str, xlabel: &str, columns: &[String]) -> String {
    let mut script = line_plot_script(csv_file, title, xlabel, columns);
    script.insert_str(
        script.find("plot ").expect("plot line present"),
        "set logscale x\n",
    );
    script
}
