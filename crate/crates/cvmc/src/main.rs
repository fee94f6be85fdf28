use std::ffi::OsString;
use std::process::exit;

use cvmc::cli;
use cvmc::CvmcError;

fn main() {
    let args: Vec<OsString> = std::env::args_os().collect();
    let wants_help = args.iter().any(|a| {
        a == "-h" || a == "--help" || a == "-V" || a == "--version" || a == "help"
    });
    match cli::parse_config(args) {
        Ok(config) => exit(cli::run(&config)),
        Err(CvmcError::Usage { msg }) => {
            if wants_help {
                println!("{msg}");
                exit(0);
            }
            eprintln!("{msg}");
            exit(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(2);
        }
    }
}
