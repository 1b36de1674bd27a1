//! Checks the inner maximizer, outer minimizer, min-max value and the
//! derivative recipe for every catalogue loss.

use lrgan::loss_family::catalogue;
use lrgan::verify::{verify_loss, Tolerances};

fn main() -> lrgan::Result<()> {
    let tol = Tolerances::default();
    let mut failed = 0;
    for e in catalogue() {
        for report in verify_loss(&e.loss, &tol) {
            let worst = report
                .checks
                .iter()
                .map(|c| c.abs_error / c.tolerance.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            let status = match (&report.skipped, report.passed) {
                (Some(reason), _) => format!("skipped ({reason})"),
                (None, true) => format!("pass, worst error {worst:.2e} of tolerance"),
                (None, false) => "FAIL".to_string(),
            };
            failed += usize::from(!report.passed);
            println!("{:<12} {:<12} {status}", report.loss_name, report.suite);
        }
    }
    println!("{failed} failing suites");
    Ok(())
}
