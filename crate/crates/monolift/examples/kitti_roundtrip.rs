//! KITTI file IO: parsing label lines, the bottom-center location
//! convention, result files with scores, and calibration handling.

use monolift::kitti::{format_label, parse_calib, parse_label_file, write_calib};

const LABELS: &str = "\
Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59
Car 0.00 2 1.85 387.63 181.54 423.81 203.12 1.67 1.87 3.69 -16.53 2.39 58.49 1.57
DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10";

fn main() {
    let labels = parse_label_file(LABELS).unwrap();
    println!("parsed {} labels", labels.len());
    for l in &labels {
        println!(
            "  {:<9} trunc {:>5.2}  occ {:>2}  alpha {:>6.2}  ry {:>6.2}",
            l.object_type, l.truncated, l.occluded, l.alpha, l.rotation_y
        );
    }

    // KITTI stores the box location at the bottom face center; the library
    // works with the geometric center and converts at the file boundary.
    let car = &labels[0];
    let center = car.center();
    println!("\nfirst car location (bottom center): {:?}", car.location);
    println!("geometric center:                   ({}, {}, {})", center.x, center.y, center.z);

    // Result files append a score as the 16th field.
    let mut scored = car.clone();
    scored.score = Some(0.87);
    print!("\nresult line: {}", format_label(&scored));

    // Round trip: written labels parse back to the same values.
    let reparsed = &parse_label_file(&format_label(&scored)).unwrap()[0];
    println!("round-trip score: {:?}", reparsed.score);

    // Calibration: P2 carries the left color camera intrinsics.
    let intr = monolift::camera::CameraIntrinsics::new(721.5377, 609.5593, 172.854, 1242.0, 375.0)
        .unwrap();
    let calib = parse_calib(&write_calib(&intr)).unwrap();
    let back = calib.intrinsics(1242.0, 375.0).unwrap();
    println!("\ncalibration round trip: f {} -> {}", intr.f, back.f);

    // Malformed files fail with a line number.
    let broken = "Car 0.0 0 0.0 10 10 50 50 1.5 1.6 3.6 0 1.6 20\n";
    println!("truncated line: {}", parse_label_file(broken).unwrap_err());
}
