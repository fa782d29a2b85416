//! `.flo` files and flow colouring: write a field, read it back
//! bit-exactly, render it as a PPM, and see a corrupt file rejected.
//!
//! ```text
//! cargo run --example flo_io -- [out_dir]
//! ```

use std::path::PathBuf;

use agflow::data::{flow_to_color, read_flo, write_flo, write_ppm, FlowField};
use agflow::Result;

fn main() -> Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("agflow_flo_io"));
    std::fs::create_dir_all(&dir).map_err(|e| agflow::Error::io(&dir, e))?;

    // A rotating field: every direction appears once around the centre.
    let (h, w) = (64, 64);
    let mut data = vec![0.0f32; 2 * h * w];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f32 - 31.5, y as f32 - 31.5);
            data[y * w + x] = -dy / 8.0;
            data[h * w + y * w + x] = dx / 8.0;
        }
    }
    let flow = FlowField::new(h, w, data)?;
    let path = dir.join("rotation.flo");
    write_flo(&flow, &path)?;
    let back = read_flo(&path)?;
    println!("round trip bit-exact: {}", back.data == flow.data);

    let ppm = dir.join("rotation.ppm");
    write_ppm(&flow_to_color(&back, None), &ppm)?;
    println!("colour wheel written to {}", ppm.display());

    let mut bytes = std::fs::read(&path).map_err(|e| agflow::Error::io(&path, e))?;
    bytes.truncate(bytes.len() - 3);
    let bad = dir.join("truncated.flo");
    std::fs::write(&bad, bytes).map_err(|e| agflow::Error::io(&bad, e))?;
    match read_flo(&bad) {
        Err(e) => println!("truncated file rejected (exit code {}): {e}", e.exit_code()),
        Ok(_) => println!("truncated file unexpectedly accepted"),
    }
    Ok(())
}
