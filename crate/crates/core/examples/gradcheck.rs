// Finite-difference check of every backward pass, optionally with a
// deliberately broken gradient to show the check failing.
//
// ```text
// cargo run --release --example gradcheck -- [configurations] [--inject-fault]
// ```

use extremity::agents::checks::{gradcheck_suite, SuiteOptions};

pub fn run_example(configurations: usize, inject_fault: bool) -> bool {
    let cases = gradcheck_suite(&SuiteOptions { configurations, inject_fault, ..Default::default() });
    let mut passed = true;
    for c in &cases {
        let ok = c.report.passed();
        passed &= ok;
        println!("{:<48} max rel {:.2e}  {}", c.label, c.report.max_rel_error(), if ok { "ok" } else { "FAIL" });
    }
    if let Some(first_bad) = cases.iter().find(|c| !c.report.passed()) {
        println!("\nfirst failure, per parameter:\n{}", first_bad.report);
    }
    println!("{} cases: {}", cases.len(), if passed { "PASS" } else { "FAIL" });
    passed
}

#[allow(dead_code)]
fn main() -> std::process::ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let configurations = args.iter().find_map(|a| a.parse().ok()).unwrap_or(20);
    let fault = args.iter().any(|a| a == "--inject-fault");
    if run_example(configurations, fault) {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
