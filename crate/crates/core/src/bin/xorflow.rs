fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("XORFLOW_LOG")).init();
    std::process::exit(xorflow::cli::main_with_args(std::env::args_os()));
}
