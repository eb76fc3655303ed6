//! Regenerates the scenario files under `scenarios/`.
use pcpg_core::{build_intersection, build_oncoming};

fn main() -> pcpg_core::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&dir)?;
    let onc = build_oncoming(0.5, 10.0, 0)?;
    let head = "# Oncoming vehicle that keeps drifting toward the ego lane (theta2 = 10,\n\
                # lateral offset 0.5 m). The plain potential-game controller collides\n\
                # here; the corrected one does not.\n";
    std::fs::write(
        dir.join("oncoming_adversarial.toml"),
        format!("{head}{}", onc.to_toml_string()?),
    )?;
    let isect = build_intersection([1.0, 100.0, 100.0, 1.0], [5.0, 13.0, 15.0, 5.0], 0)?;
    let head = "# Four-way intersection with two aggressive cross-traffic drivers\n\
                # (theta = 100, desired speeds 13 and 15 m/s). The ego assumes every\n\
                # other driver is nominal, which leads the uncorrected controller into\n\
                # a collision at 4.5 s.\n";
    std::fs::write(
        dir.join("intersection_aggressive.toml"),
        format!("{head}{}", isect.to_toml_string()?),
    )?;
    Ok(())
}
