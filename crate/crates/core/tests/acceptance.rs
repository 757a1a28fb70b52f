//! One line per acceptance criterion. Failing criteria are reported, not
//! hidden: the process exits 0 unless `CWSOC_STRICT=1` is set.
//!
//! `CWSOC_ONLY=3,8` restricts the run to the listed criteria.

use std::time::Instant;

use cwsoc::audit::{run, AuditContext};
use cwsoc::simulate::Workers;

fn main() {
    let only: Option<Vec<u8>> = std::env::var("CWSOC_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let ctx = AuditContext { workers: Workers::new(threads).expect("worker pool"), ..AuditContext::default() };
    let mut failed = 0;
    println!("acceptance: {threads} worker thread(s)");
    for id in 1..=12u8 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = run(id, &ctx);
        let secs = start.elapsed().as_secs_f64();
        failed += !o.pass as usize;
        println!(
            "criterion {:>2} {:<30} {}  ({secs:.1}s)  {}",
            o.id,
            o.title,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {failed} criterion(s) failed");
    if failed > 0 && std::env::var("CWSOC_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
