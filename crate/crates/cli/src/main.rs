fn main() {
    let out = rpqwidth_cli::run(std::env::args_os());
    if out.is_error {
        eprint!("{}", out.output);
    } else {
        print!("{}", out.output);
    }
    std::process::exit(out.code);
}
