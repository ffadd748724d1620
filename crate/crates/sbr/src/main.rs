use std::process::ExitCode;

fn main() -> ExitCode {
    let out = sbr::run(std::env::args_os());
    if out.code == 2 {
        eprint!("{}", out.report);
        if !out.report.ends_with('\n') {
            eprintln!();
        }
    } else {
        print!("{}", out.report);
    }
    ExitCode::from(out.code as u8)
}
