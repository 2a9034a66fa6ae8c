#ifndef MCAF_NIQE_HPP
#define MCAF_NIQE_HPP

#include <string>
#include <vector>

#include "mcaf/image.hpp"

// No-reference quality: natural-scene-statistics model over MSCN
// coefficients. A pristine model is fit from a user-supplied corpus (mean and
// covariance of 36 GGD/AGGD features per patch over two scales); the score of
// an image is the Mahalanobis-style distance between its own patch-feature
// moments and the pristine model. Lower is better.

namespace mcaf {

struct NiqeConfig {
    int patch_size = 96;
    double sharpness_fraction = 0.75; // keep patches above this fraction of peak sharpness
    double ridge = 1e-6;              // covariance regularizer
};

struct NiqeModel {
    int patch_size = 96;
    std::vector<double> mean;       // 36 features
    std::vector<double> covariance; // 36x36 row-major
    bool regularized = false;       // set when the covariance needed the ridge
};

// Generalized Gaussian moment-matching fit: returns (shape alpha, sigma^2).
std::pair<double, double> ggd_fit(const std::vector<double>& x);

struct AggdFit {
    double alpha = 0;
    double mean = 0;
    double sigma_l_sq = 0;
    double sigma_r_sq = 0;
};
AggdFit aggd_fit(const std::vector<double>& x);

// 18 features per scale (2 scales): GGD of the MSCN field plus AGGD of the
// four orientation products.
std::vector<double> niqe_features(const Image& img, int patch_size, bool sharpness_filter,
                                  double sharpness_fraction, std::vector<std::vector<double>>* per_patch);

NiqeModel niqe_fit(const std::vector<Image>& corpus, const NiqeConfig& cfg = {});
double niqe_score(const Image& img, const NiqeModel& model);

void niqe_save(const NiqeModel& model, const std::string& path);
NiqeModel niqe_load(const std::string& path);

} // namespace mcaf

#endif
