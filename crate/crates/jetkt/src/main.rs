fn main() {
    eprintln!("jetkt: command-line interface not yet wired up");
    std::process::exit(2);
}
