//! MultiBin orientation decoding: 72 bins of 5 degrees each, decoded as
//! the circular weighted mean of the bin medians.

use monolift::lifting::{
    bin_index, bin_median, circular_weighted_mean, decode_local_orientation, ORIENT_BINS,
};

fn one_hot(idx: usize) -> [f64; ORIENT_BINS] {
    let mut bins = [0.0; ORIENT_BINS];
    bins[idx] = 1.0;
    bins
}

fn main() {
    println!("{} bins, {:.1} degrees each\n", ORIENT_BINS, 360.0 / ORIENT_BINS as f64);

    // A one-hot distribution decodes to that bin's median angle.
    for idx in [0, 17, 36, 71] {
        let theta = decode_local_orientation(&one_hot(idx)).unwrap();
        println!(
            "one-hot bin {idx:>2}: median {:>8.3} deg, decoded {:>8.3} deg",
            bin_median(idx).to_degrees(),
            theta.to_degrees()
        );
    }

    // Mass split across neighboring bins interpolates between their
    // medians on the circle.
    let mut bins = [0.0; ORIENT_BINS];
    bins[4] = 0.75;
    bins[5] = 0.25;
    let theta = decode_local_orientation(&bins).unwrap();
    println!(
        "\n0.75 in bin 4 ({:.1} deg) + 0.25 in bin 5 ({:.1} deg) decodes to {:.4} deg",
        bin_median(4).to_degrees(),
        bin_median(5).to_degrees(),
        theta.to_degrees()
    );

    // The circular mean handles wraparound: mass on both sides of the
    // +-180 degree seam stays near the seam instead of averaging to zero.
    let near_pi = circular_weighted_mean([(0.5, 179.0f64.to_radians()), (0.5, (-179.0f64).to_radians())])
        .unwrap();
    println!("mass at +179 and -179 degrees decodes to {:.1} deg", near_pi.to_degrees());

    // bin_index is the decoder's inverse on bin medians.
    let all_match = (0..ORIENT_BINS).all(|i| bin_index(bin_median(i)) == i);
    println!("\nbin_index(bin_median(i)) == i for all bins: {all_match}");
}
