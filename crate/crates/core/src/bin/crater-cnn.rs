fn main() {
    let code = crater_cnn::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
