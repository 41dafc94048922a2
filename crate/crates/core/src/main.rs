fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(airq_alarm::cli::dispatch(&args));
}
