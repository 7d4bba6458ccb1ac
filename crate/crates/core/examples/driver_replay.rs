//! Persists noise realizations and replays them bit for bit.
//!
//! Both driver types serialize to a plain text format; reloading and
//! re-simulating reproduces every stored state exactly, which is the basis
//! for debugging a single path out of a large Monte Carlo run.
//!
//! Run: cargo run --example driver_replay

use nsdde::driver::{gen_brownian_indexed, gen_jumps_indexed, BrownianPathIncrements,
    JumpRealization};
use nsdde::model::{build_grid, parse_rational, sample_segment, History};
use nsdde::problems::{make_cubic_neutral, make_jump_linear};
use nsdde::scheme::{simulate_bm, simulate_jump};

fn main() {
    let grid = build_grid(
        parse_rational("1").unwrap(),
        parse_rational("1/4").unwrap(),
        parse_rational("1/16").unwrap(),
    )
    .unwrap();
    let history = History::constant(vec![1.0]);

    // Brownian increments: write, read back, compare the simulated paths.
    let system = make_cubic_neutral(0.25).unwrap();
    let seg = sample_segment(&grid, &history).unwrap();
    let drv = gen_brownian_indexed(&grid, system.dim_noise, 42, 17);
    let mut buf = Vec::new();
    drv.write_to(&mut buf).unwrap();
    let reloaded = BrownianPathIncrements::read_from(&mut buf.as_slice()).unwrap();
    let original = simulate_bm(&system, &seg, &drv).unwrap();
    let replayed = simulate_bm(&system, &seg, &reloaded).unwrap();
    for (n, x) in original.entries() {
        assert_eq!(x, replayed.value(n));
    }
    println!(
        "brownian driver: {} increments, {} bytes on disk, replay bit-identical",
        grid.steps(),
        buf.len()
    );

    // Jump realization: same round trip.
    let jsystem = make_jump_linear(2.0, 0.5).unwrap();
    let jr = gen_jumps_indexed(&grid, jsystem.total_intensity, &jsystem.mark_sampler, 42, 17)
        .unwrap();
    let mut jbuf = Vec::new();
    jr.write_to(&mut jbuf).unwrap();
    let jreloaded = JumpRealization::read_from(&mut jbuf.as_slice()).unwrap();
    let joriginal = simulate_jump(&jsystem, &seg, &grid, &jr).unwrap();
    let jreplayed = simulate_jump(&jsystem, &seg, &grid, &jreloaded).unwrap();
    for (n, x) in joriginal.entries() {
        assert_eq!(x, jreplayed.value(n));
    }
    println!(
        "jump driver: {} events, {} bytes on disk, replay bit-identical",
        jr.events().len(),
        jbuf.len()
    );
}
