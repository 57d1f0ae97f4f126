//! The full lifting pipeline on one synthetic frame: generate ground
//! truth with idealized detections, lift each detection back to 3D, and
//! compare against the poses that produced them.

use monolift::camera::CameraIntrinsics;
use monolift::lifting::assemble_pose_auto;
use monolift::synth::{generate_scene, SceneConfig, YawMode};
use monolift::TemplateSet;

fn main() {
    let intr = CameraIntrinsics::new(721.5377, 609.5593, 172.854, 1242.0, 375.0).unwrap();
    let templates = TemplateSet::builtin();
    let cfg = SceneConfig {
        seed: 7,
        n_instances: 6,
        yaw_mode: YawMode::BinAligned,
        ..SceneConfig::default()
    };

    let instances = generate_scene(&cfg, &intr, &templates).unwrap();
    println!("generated {} instances\n", instances.len());
    println!(
        "{:>3} {:>9} {:>12} {:>12} {:>12}",
        "idx", "depth m", "center err", "yaw err", "dim err"
    );

    for (i, inst) in instances.iter().enumerate() {
        let pose = assemble_pose_auto(&intr, &inst.det, &templates).unwrap();
        let center_err = (pose.center - inst.gt.center).norm();
        let yaw_err = monolift::angles::angular_difference(pose.yaw, inst.gt.yaw);
        let dim_err = (pose.dims.w - inst.gt.dims.w)
            .abs()
            .max((pose.dims.h - inst.gt.dims.h).abs())
            .max((pose.dims.l - inst.gt.dims.l).abs());
        println!(
            "{i:>3} {:>9.2} {:>12.3e} {:>12.3e} {:>12.3e}",
            inst.gt.center.z, center_err, yaw_err, dim_err
        );
    }

    println!("\nnoise-free bin-aligned detections recover the exact pose:");
    println!("center errors come from floating-point round trips only");
}
