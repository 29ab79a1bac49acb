//! Builds a run configuration from TOML plus overrides, the way the binary
//! does, and shows what an unknown key produces.

use ffpe::config::Config;

const TOML: &str = r#"
[params]
alpha = 1.4
beta = 0.7

[grid]
nx = 64
nv = 64

[data]
kind = "modes"
amplitude = 0.05
kmax = 4
decay = 1.0
seed = 11
"#;

fn main() -> ffpe::Result<()> {
    let cfg = Config::from_toml(TOML, &["solver.tol=1e-10".into(), "time.jmin=-4".into()])?;
    let params = cfg.params()?;
    println!("alpha={} beta={} gamma={:.4}", params.alpha, params.beta, params.gamma);
    println!("grid={:?} tol={} samples={}", cfg.grid, cfg.solver.tol, cfg.time.build()?.times.len());
    match Config::from_toml("[grid]\nnx = 64\nwidth = 2\n", &[]) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
