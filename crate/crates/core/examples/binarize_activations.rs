//! Turn a continuous activation trace into an event sequence, with both an
//! absolute threshold and a percentile rule, then round-trip it through CSV.
//!
//! ```bash
//! cargo run --example binarize_activations
//! ```

use driven_pp::ingest::{binarize, parse_events, threshold_value, write_events_to, ActivationStream, BinarizeRule};

fn main() -> driven_pp::Result<()> {
    // Sparse bursts on a mostly silent trace, sampled at 100 Hz.
    let samples: Vec<(f64, f64)> = (0..3000)
        .map(|i| {
            let t = i as f64 * 0.01;
            let phase = (t * 0.7).fract();
            let v = if phase < 0.02 { 3.0 + (t * 13.0).sin() } else if i % 17 == 0 { 0.2 } else { 0.0 };
            (t, v)
        })
        .collect();
    let stream = ActivationStream::new("atom_3", samples)?;
    let duration = stream.duration();

    for rule in [BinarizeRule::Absolute(1.0), BinarizeRule::Percentile(50.0), BinarizeRule::Percentile(90.0)] {
        let events = binarize(&stream, rule, duration)?;
        println!(
            "{rule:?}: threshold {:.4}, {} events",
            threshold_value(&stream, rule)?,
            events.len()
        );
    }

    let events = binarize(&stream, BinarizeRule::Absolute(1.0), duration)?;
    let mut csv = Vec::new();
    write_events_to(&events, &mut csv)?;
    let back = parse_events(csv.as_slice(), duration)?;
    assert_eq!(back, events);
    println!("CSV round trip: {} bytes, first lines:", csv.len());
    for line in String::from_utf8_lossy(&csv).lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
