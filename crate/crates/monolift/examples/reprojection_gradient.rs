//! The reprojection loss and its analytic gradient: zero at the true
//! pose, informative away from it, and matching central finite
//! differences to high precision.

use monolift::camera::CameraIntrinsics;
use monolift::losses::{reprojection_kink_margin, reprojection_loss, PoseParams, ReprojectionTargets};
use monolift::synth::{generate_scene, SceneConfig, YawMode};
use monolift::TemplateSet;

const PARAM_NAMES: [&str; 7] = ["c_x", "c_y", "c_z", "yaw", "w", "h", "l"];

fn main() {
    let intr = CameraIntrinsics::new(721.5377, 609.5593, 172.854, 1242.0, 375.0).unwrap();
    let templates = TemplateSet::builtin();
    let cfg =
        SceneConfig { seed: 11, n_instances: 1, yaw_mode: YawMode::BinAligned, ..Default::default() };
    let inst = generate_scene(&cfg, &intr, &templates).unwrap().remove(0);
    let tpl = templates.for_class(inst.gt.class_id).unwrap();

    let gt = ReprojectionTargets {
        keypoints: inst.gt_keypoints.map(|(px, _)| px),
        visible: inst.gt_keypoints.map(|(_, vis)| vis),
        box2d: inst.label.bbox,
    };
    let truth =
        PoseParams { center: inst.gt.center, yaw: inst.gt.yaw, dims: inst.gt.dims };

    let at_truth = reprojection_loss(&intr, tpl, &truth, &gt).unwrap();
    println!("loss at the true pose: {:.3e}", at_truth.value);

    // Perturb the pose and compare the analytic gradient against central
    // differences, away from the non-differentiable seams.
    let mut probe = truth.as_array();
    for (p, d) in probe.iter_mut().zip([0.12, -0.08, 0.15, 0.06, 0.05, -0.04, 0.07]) {
        *p += d;
    }
    let probe = PoseParams::from_array(probe);
    let margin = reprojection_kink_margin(&intr, tpl, &probe, &gt).unwrap();
    let at_probe = reprojection_loss(&intr, tpl, &probe, &gt).unwrap();
    println!("loss at the perturbed pose: {:.4} (kink margin {margin:.3})\n", at_probe.value);

    println!("{:>6} {:>16} {:>16} {:>12}", "param", "analytic", "finite diff", "rel err");
    let p0 = probe.as_array();
    for j in 0..7 {
        let h = 1e-6 * p0[j].abs().max(1.0);
        let (mut lo, mut hi) = (p0, p0);
        lo[j] -= h;
        hi[j] += h;
        let f_lo = reprojection_loss(&intr, tpl, &PoseParams::from_array(lo), &gt).unwrap().value;
        let f_hi = reprojection_loss(&intr, tpl, &PoseParams::from_array(hi), &gt).unwrap().value;
        let fd = (f_hi - f_lo) / (2.0 * h);
        let g = at_probe.grad[j];
        let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1.0);
        println!("{:>6} {g:>16.6} {fd:>16.6} {rel:>12.2e}", PARAM_NAMES[j]);
    }
}
