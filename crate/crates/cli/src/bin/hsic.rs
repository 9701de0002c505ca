use nukes_cli::commands::{main_with, Hsic};

fn main() {
    std::process::exit(main_with::<Hsic>(std::env::args(), |p| p.command.run()));
}
