//! Samples the kernel and one of its derivatives, prints basic invariants
//! and writes the kernel as an array file.

use ffpe::io::{output_root, read_array, write_field};
use ffpe::kernel::kernel_snapshot;
use ffpe::symbols::DerivOrders;
use ffpe::{Params, TorusGrid};

fn main() -> ffpe::Result<()> {
    let params = Params::default();
    let grid = TorusGrid::new(1, 32.0, 24.0, 256, 128)?;
    for t in [0.5, 1.0, 2.0] {
        let h = kernel_snapshot(t, DerivOrders::along_first(0, 0), &grid, &params)?;
        let dv = kernel_snapshot(t, DerivOrders::along_first(0, 1), &grid, &params)?;
        println!(
            "t={t:<4} mass={:.15} min/max={:+.2e} even defect={:.1e} sup={:.4} sup dv={:.4}",
            h.mass(),
            h.relative_min(),
            h.evenness_defect(),
            h.field.sup_norm(),
            dv.field.sup_norm()
        );
    }

    let dir = output_root(None).join("examples");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("kernel_t1.bin");
    let h = kernel_snapshot(1.0, DerivOrders::along_first(0, 0), &grid, &params)?;
    write_field(&path, &h.field, 1.0, 0)?;
    let (header, back) = read_array(&path)?;
    println!("wrote {} (t = {}, identical on read: {})", path.display(), header.time, back[0] == h.field);
    Ok(())
}
