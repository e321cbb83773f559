//! Discrete vector calculus on the MAC grid: exact identities and norms.

use std::f64::consts::PI;
use std::sync::Arc;

use machlimit::operators;
use machlimit::{Grid, GridSpec, VectorField};

fn main() -> machlimit::Result<()> {
    let g = Arc::new(Grid::new(&GridSpec::channel(2, 32))?);
    let mut u = VectorField::from_fn(&g, |c, x| match c {
        0 => (2.0 * PI * x[0]).sin() * (PI * x[1]).cos(),
        _ => (2.0 * PI * x[0]).cos() * (PI * x[1]).sin(),
    });
    u.zero_wall_normal();
    u.fill_ghost_velocity(0.0)?;

    let div = operators::div_h(&u);
    let curl = operators::curl_h(&u);
    println!("||div u||      = {:.6e}", div.norm_l2());
    println!("||curl u||     = {:.6e}", curl.norm_l2());
    println!("vector identity residual (interior) = {:.3e}", operators::identity_residual(&u));
    println!("div/curl ratio = {:.4}", operators::divcurl_ratio(&u)?);

    let n = operators::norms(&u, 2)?;
    println!("u: l2 {:.5} h1 {:.5} h2 {:.5} boundary {:.5}", n.l2, n.h1, n.h2, n.boundary_l2);

    // grad is the negative adjoint of div once u.n = 0
    let s = div.clone();
    let lhs = div.dot(&s)?;
    let rhs = -u.dot(&operators::grad_h(&s))?;
    println!("<div u, s> = {lhs:.12e}\n-<u, grad s> = {rhs:.12e}");
    Ok(())
}
