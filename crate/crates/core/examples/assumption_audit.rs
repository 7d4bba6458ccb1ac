//! Audits every catalog system against its declared structural bounds.
//!
//! Each system ships with constants (growth, contraction, local and global
//! Lipschitz-type bounds); the auditor samples state pairs in a ball and
//! reports the worst relative violation per bound. Checked bounds must come
//! out at zero; produced constants (the local ones) are estimated from the
//! samples. The shipped negative control has a drift that grows too fast
//! for its declared constant and must fail.
//!
//! Run: cargo run --example assumption_audit

use nsdde::problems::{audit_diffusion, audit_jump, catalog, AuditReport, CatalogSystem,
    CATALOG_IDS, NEGATIVE_CONTROL_ID};

fn show(id: &str, report: &AuditReport) {
    let verdict = if report.is_clean() { "clean" } else { "VIOLATED" };
    println!("{id} ({} samples in radius {}): {verdict}", report.n_samples, report.radius);
    for e in &report.entries {
        if e.max_violation > 0.0 {
            println!(
                "  {:<18} constant {:>10.4}  violation {:.4e} at {:?}",
                e.assumption, e.constant, e.max_violation, e.witness
            );
        } else {
            println!("  {:<18} constant {:>10.4}  ok", e.assumption, e.constant);
        }
    }
}

fn main() {
    for id in CATALOG_IDS.iter().chain([NEGATIVE_CONTROL_ID].iter()) {
        let report = match catalog(id).unwrap() {
            CatalogSystem::Diffusion { system, .. } => audit_diffusion(&system, 2000, 10.0, 42),
            CatalogSystem::Jump { system, .. } => audit_jump(&system, 2000, 10.0, 2.0, 42),
        };
        show(id, &report);
    }
}
