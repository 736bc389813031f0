//! Parsing, evaluating, differentiating and rendering an expression tree.

use symforest::expr::{parse_with_features, render, render_infix, simplify, to_dot};

fn main() -> Result<(), symforest::Error> {
    let tree = parse_with_features("(add (mul (const 0.5) (const 2)) (div (var 1) (const 0.175)))", 2)?;
    let x = [-0.4, 0.03];
    println!("tree:       {}", render(&tree));
    println!("infix:      {}", render_infix(&tree, None));
    println!("simplified: {}", render_infix(&simplify(&tree), None));
    println!("f({x:?}) = {:.6}", tree.eval(&x)?);
    println!("d f / d constants = {:?}", tree.grad_constants(&x, 1.0)?);
    println!("\n{}", to_dot(&tree, "policy"));
    Ok(())
}
