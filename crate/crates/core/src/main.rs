use std::process::ExitCode;

fn main() -> ExitCode {
    // Die quietly on closed pipes like other command-line tools instead of
    // panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    dtdq::cli::main_entry()
}
