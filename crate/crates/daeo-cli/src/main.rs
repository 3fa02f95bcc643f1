use daeo_cli::CliError;

fn main() {
    let code = match daeo_cli::parse_args(std::env::args()).and_then(|spec| daeo_cli::run(&spec)) {
        Ok(()) => 0,
        Err(CliError::Help(text)) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
