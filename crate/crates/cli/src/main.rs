use nukes_cli::commands::{main_with, Nukesctl};

fn main() {
    std::process::exit(main_with::<Nukesctl>(std::env::args(), |p| p.command.run()));
}
