fn main() {
    std::process::exit(potential_games::cli::main_with_args(std::env::args_os()));
}
