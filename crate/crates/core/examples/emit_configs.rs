//! Prints the shipped default configurations to stdout, or writes them into
//! a directory when one is given:
//!
//! ```text
//! cargo run -p chamap --example emit_configs -- configs/
//! ```
//!
//! Three files: the default mask set (38 CHAs over 6 bits, so some raw
//! indices surface as unmapped), a total 32-CHA mask set for scheduling and
//! simulation runs, and the default 6x7 mesh.

use chamap::config::{mask_config_to_string, mesh_config_to_string};
use chamap::{MeshConfig, XorMaskSet};

fn main() {
    let default_masks = mask_config_to_string(&XorMaskSet::synthetic_default());
    let sim_masks = mask_config_to_string(
        &XorMaskSet::random_quadrant_valid(42, 5, 32).expect("quadrant-valid set"),
    );
    let mesh = mesh_config_to_string(&MeshConfig::default_knl());

    match std::env::args().nth(1) {
        Some(dir) => {
            let dir = std::path::Path::new(&dir);
            std::fs::create_dir_all(dir).expect("create config dir");
            for (name, text) in [
                ("default-masks.cfg", &default_masks),
                ("sim-masks-32.cfg", &sim_masks),
                ("default-mesh.cfg", &mesh),
            ] {
                std::fs::write(dir.join(name), text).expect("write config");
                println!("wrote {}", dir.join(name).display());
            }
        }
        None => {
            print!("# ---- default-masks.cfg ----\n{default_masks}");
            print!("# ---- sim-masks-32.cfg ----\n{sim_masks}");
            print!("# ---- default-mesh.cfg ----\n{mesh}");
        }
    }
}
