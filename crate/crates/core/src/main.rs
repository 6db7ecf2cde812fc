fn main() { std::process::exit(papm::cli::run(std::env::args())); }
