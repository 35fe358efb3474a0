fn main() { std::process::exit(navfuse::cli::run(std::env::args_os())); }
