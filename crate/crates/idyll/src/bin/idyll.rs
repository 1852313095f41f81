//! Batch runner: `idyll <config.json> [--output DIR] [--threads N]`.

use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> ! {
    eprintln!("usage: idyll <config.json> [--output DIR] [--threads N]");
    std::process::exit(1);
}

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut config_path: Option<PathBuf> = None;
    let mut output: Option<PathBuf> = None;
    let mut threads: Option<usize> = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--output" => {
                let Some(v) = args.next() else { usage() };
                output = Some(PathBuf::from(v));
            }
            "--threads" => {
                let Some(v) = args.next() else { usage() };
                let Ok(n) = v.parse() else { usage() };
                threads = Some(n);
            }
            "--help" | "-h" => usage(),
            _ if config_path.is_none() => config_path = Some(PathBuf::from(arg)),
            _ => usage(),
        }
    }
    let Some(config_path) = config_path else { usage() };

    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("idyll: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let config = match idyll::runner::RunConfig::from_file(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("idyll: config error: {e}");
            return ExitCode::from(1);
        }
    };
    let out_dir = output
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match idyll::runner::run_to_files(&config, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("idyll: {e}");
            if code == 2 {
                let diag = serde_json::json!({ "error": e.to_string() });
                let _ = std::fs::create_dir_all(&out_dir);
                let _ = std::fs::write(
                    out_dir.join("diagnostic.json"),
                    serde_json::to_string_pretty(&diag).unwrap_or_default(),
                );
            }
            ExitCode::from(code as u8)
        }
    }
}
