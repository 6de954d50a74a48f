//! Prints the connection probability against users per street, with the
//! fitted critical values.
//!
//! cargo run --release --example u_curve -- [theta] [reps]

use streetperc::experiments::{extract_double_critical, linspace, sweep, SweepParam};
use streetperc::{NetworkParams, Window};

fn main() {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map_or(0.004, |s| s.parse().expect("theta"));
    let reps: usize = args.next().map_or(100, |s| s.parse().expect("reps"));
    let window = Window::new(1500.0).expect("window");
    let base = NetworkParams {
        theta,
        ..Default::default()
    };
    let grid = linspace(0.0, 10.0, 21).expect("grid");
    let curve = sweep(
        &base,
        SweepParam::UsersPerStreet,
        &grid,
        &window,
        reps,
        2024,
    )
    .expect("sweep");
    println!("theta = {theta}, reps = {reps}");
    for point in &curve.points {
        let e = point.estimate.as_ref().expect("estimate");
        println!(
            "U = {:4.1}  p = {:.3}  [{:.3}, {:.3}]",
            point.value, e.probability, e.ci_low, e.ci_high
        );
    }
    match extract_double_critical(&curve.samples(), reps) {
        None => println!("no percolation window"),
        Some(dc) => println!("U1* = {:?}\nU2* = {:?}", dc.rising, dc.falling),
    }
}
