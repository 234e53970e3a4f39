use clap::Parser;
use smre_cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("smre_cli=info,smre=warn"),
    )
    .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(records) => {
            for record in records {
                println!("{record}");
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(1);
        }
    }
}
