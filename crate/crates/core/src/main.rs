fn main() {
    let code = ricci_mcmc::cli::parse_and_dispatch(std::env::args_os());
    std::process::exit(code);
}
