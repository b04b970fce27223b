fn main() {
    std::process::exit(flowbench_service::cli::main(std::env::args_os()));
}
