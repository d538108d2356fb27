fn main() {
    std::process::exit(rplab_cli::app::main_from_env());
}
