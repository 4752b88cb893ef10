fn main() { std::process::exit(spinflux_cli::app::main_entry()) }
