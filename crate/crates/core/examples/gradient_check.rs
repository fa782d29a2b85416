//! The 64-bit finite-difference suite: every differentiable operation,
//! the reasoning block in each mode, and a miniature end-to-end model.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use agflow::run::gradsuite::{format_suite, gradcheck_suite, SuiteDims};
use agflow::Result;

fn main() -> Result<()> {
    let cases = gradcheck_suite(SuiteDims::default(), 0)?;
    print!("{}", format_suite(&cases));
    let failed = cases.iter().filter(|c| !c.passes()).count();
    println!("{} cases, {failed} failed", cases.len());
    Ok(())
}
