fn main() {
    std::process::exit(hoslab::run_args(std::env::args_os(), std::env::vars()));
}
