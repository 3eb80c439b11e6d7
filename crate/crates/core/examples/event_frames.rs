//! Event stream -> frames -> per-user tiles -> bit streams, and back.
//!
//! cargo run --example event_frames

use impulse_rake::events::{
    accumulate_events, assemble_frame, frame_to_streams, parse_event_stream, synth_sparse_frame,
    tile_frame,
};

const STREAM: &str = "\
# x y t rho
3 5 10 1
3 5 40 -1
0 0 120 1
7 7 130 -1
";

fn main() -> impulse_rake::Result<()> {
    let events = parse_event_stream(STREAM)?;
    let frames = accumulate_events(&events, 100, 8, 8)?;
    println!(
        "{} events -> {} frames of 8x8x2",
        events.len(),
        frames.len()
    );
    for (i, f) in frames.iter().enumerate() {
        println!(
            "frame {i}: pixel (5,3) = {:?}, ones = {}",
            f.pixel(5, 3),
            f.count_ones()
        );
    }

    let frame = synth_sparse_frame(0.05, 16, 16, 42)?;
    let tiles = tile_frame(&frame, 4)?;
    let streams = frame_to_streams(&frame, 4)?;
    println!(
        "synthetic 16x16 frame: bit rate {:.3}, {} tiles of {}x{}, streams of {} bits",
        frame.bit_rate(),
        tiles.tiles.len(),
        tiles.tiles[0].height,
        tiles.tiles[0].width,
        streams[0].len()
    );
    for s in &streams {
        println!("  user {}: {} ones", s.user, s.ones());
    }
    let back = assemble_frame(&streams, 4, 16, 16)?;
    println!("round trip exact: {}", back.bits() == frame.bits());
    Ok(())
}
