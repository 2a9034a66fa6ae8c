#include "mcaf/niqe.hpp"

#include <algorithm>
#include <cmath>

#include "mcaf/dcp.hpp" // FloatMap
#include "mcaf/weights.hpp"

namespace mcaf {

namespace {

// shape-parameter lookup grid shared by the GGD and AGGD fitters
struct AlphaGrid {
    std::vector<double> alpha;
    std::vector<double> ggd_ratio;  // Gamma(1/a)Gamma(3/a)/Gamma(2/a)^2
    std::vector<double> aggd_ratio; // Gamma(2/a)^2/(Gamma(1/a)Gamma(3/a))

    AlphaGrid() {
        for (double a = 0.2; a <= 10.0 + 1e-12; a += 0.001) {
            const double g1 = std::tgamma(1.0 / a);
            const double g2 = std::tgamma(2.0 / a);
            const double g3 = std::tgamma(3.0 / a);
            alpha.push_back(a);
            ggd_ratio.push_back(g1 * g3 / (g2 * g2));
            aggd_ratio.push_back(g2 * g2 / (g1 * g3));
        }
    }
};

const AlphaGrid& grid() {
    static const AlphaGrid g;
    return g;
}

FloatMap luminance255(const Image& img) {
    FloatMap m(img.h, img.w);
    for (int64_t i = 0; i < img.pixels(); ++i) {
        const size_t o = static_cast<size_t>(3 * i);
        m.data[static_cast<size_t>(i)] =
            255.0f * (img.data[o] + img.data[o + 1] + img.data[o + 2]) / 3.0f;
    }
    return m;
}

// 7x7 gaussian (sigma 7/6), separable, clamped borders
FloatMap gauss7(const FloatMap& src) {
    constexpr int kR = 3;
    double k[2 * kR + 1];
    double ksum = 0;
    for (int i = -kR; i <= kR; ++i) {
        k[i + kR] = std::exp(-(i * i) / (2.0 * (7.0 / 6.0) * (7.0 / 6.0)));
        ksum += k[i + kR];
    }
    for (double& v : k) v /= ksum;

    FloatMap tmp(src.h, src.w), out(src.h, src.w);
    for (int64_t y = 0; y < src.h; ++y)
        for (int64_t x = 0; x < src.w; ++x) {
            double acc = 0;
            for (int i = -kR; i <= kR; ++i)
                acc += k[i + kR] * src.at(y, std::clamp<int64_t>(x + i, 0, src.w - 1));
            tmp.at(y, x) = static_cast<float>(acc);
        }
    for (int64_t y = 0; y < src.h; ++y)
        for (int64_t x = 0; x < src.w; ++x) {
            double acc = 0;
            for (int i = -kR; i <= kR; ++i)
                acc += k[i + kR] * tmp.at(std::clamp<int64_t>(y + i, 0, src.h - 1), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

struct MscnField {
    FloatMap mscn;
    FloatMap sigma;
};

MscnField mscn_field(const FloatMap& lum) {
    MscnField f{FloatMap(lum.h, lum.w), FloatMap(lum.h, lum.w)};
    const FloatMap mu = gauss7(lum);
    FloatMap sq(lum.h, lum.w);
    for (size_t i = 0; i < lum.data.size(); ++i) sq.data[i] = lum.data[i] * lum.data[i];
    const FloatMap musq = gauss7(sq);
    for (size_t i = 0; i < lum.data.size(); ++i) {
        const double var = std::max(0.0, static_cast<double>(musq.data[i]) -
                                             static_cast<double>(mu.data[i]) * mu.data[i]);
        const double sigma = std::sqrt(var);
        f.sigma.data[i] = static_cast<float>(sigma);
        f.mscn.data[i] = static_cast<float>((lum.data[i] - mu.data[i]) / (sigma + 1.0));
    }
    return f;
}

FloatMap downsample2(const FloatMap& src) {
    FloatMap out(src.h / 2, src.w / 2);
    for (int64_t y = 0; y < out.h; ++y)
        for (int64_t x = 0; x < out.w; ++x)
            out.at(y, x) = 0.25f * (src.at(2 * y, 2 * x) + src.at(2 * y, 2 * x + 1) +
                                    src.at(2 * y + 1, 2 * x) + src.at(2 * y + 1, 2 * x + 1));
    return out;
}

// 18 features of one MSCN patch: GGD of the coefficients plus AGGD of the
// four orientation products (H, V, D1, D2).
void patch_features(const FloatMap& mscn, int64_t y0, int64_t x0, int64_t p, std::vector<double>& out) {
    std::vector<double> coeffs;
    coeffs.reserve(static_cast<size_t>(p * p));
    for (int64_t y = y0; y < y0 + p; ++y)
        for (int64_t x = x0; x < x0 + p; ++x) coeffs.push_back(mscn.at(y, x));
    const auto [alpha, sigma_sq] = ggd_fit(coeffs);
    out.push_back(alpha);
    out.push_back(sigma_sq);

    const int64_t shifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (const auto& s : shifts) {
        std::vector<double> prod;
        prod.reserve(static_cast<size_t>(p * p));
        for (int64_t y = y0; y < y0 + p; ++y)
            for (int64_t x = x0; x < x0 + p; ++x) {
                const int64_t yy = y + s[0], xx = x + s[1];
                if (yy < y0 || yy >= y0 + p || xx < x0 || xx >= x0 + p) continue;
                prod.push_back(static_cast<double>(mscn.at(y, x)) * mscn.at(yy, xx));
            }
        const AggdFit f = aggd_fit(prod);
        out.push_back(f.alpha);
        out.push_back(f.mean);
        out.push_back(f.sigma_l_sq);
        out.push_back(f.sigma_r_sq);
    }
}

// Gauss-Jordan inverse with partial pivoting; returns false on a vanishing pivot.
bool invert(std::vector<double> a, int n, std::vector<double>& inv) {
    inv.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[static_cast<size_t>(r) * n + col]) >
                std::abs(a[static_cast<size_t>(pivot) * n + col]))
                pivot = r;
        if (std::abs(a[static_cast<size_t>(pivot) * n + col]) < 1e-12) return false;
        if (pivot != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a[static_cast<size_t>(pivot) * n + c], a[static_cast<size_t>(col) * n + c]);
                std::swap(inv[static_cast<size_t>(pivot) * n + c], inv[static_cast<size_t>(col) * n + c]);
            }
        const double d = a[static_cast<size_t>(col) * n + col];
        for (int c = 0; c < n; ++c) {
            a[static_cast<size_t>(col) * n + c] /= d;
            inv[static_cast<size_t>(col) * n + c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[static_cast<size_t>(r) * n + col];
            if (f == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
                inv[static_cast<size_t>(r) * n + c] -= f * inv[static_cast<size_t>(col) * n + c];
            }
        }
    }
    return true;
}

bool invert_with_ridge(const std::vector<double>& a, int n, double ridge, std::vector<double>& inv,
                       bool* used_ridge) {
    if (invert(a, n, inv)) return true;
    std::vector<double> reg = a;
    for (int attempt = 0; attempt < 6; ++attempt) {
        for (int i = 0; i < n; ++i) reg[static_cast<size_t>(i) * n + i] += ridge;
        if (used_ridge) *used_ridge = true;
        if (invert(reg, n, inv)) return true;
        ridge *= 10.0;
    }
    return false;
}

struct Moments {
    std::vector<double> mean;
    std::vector<double> cov;
};

Moments feature_moments(const std::vector<std::vector<double>>& rows) {
    const size_t dim = rows[0].size();
    Moments m;
    m.mean.assign(dim, 0.0);
    for (const auto& r : rows)
        for (size_t i = 0; i < dim; ++i) m.mean[i] += r[i];
    for (double& v : m.mean) v /= static_cast<double>(rows.size());
    m.cov.assign(dim * dim, 0.0);
    if (rows.size() > 1) {
        for (const auto& r : rows)
            for (size_t i = 0; i < dim; ++i)
                for (size_t j = 0; j < dim; ++j)
                    m.cov[i * dim + j] += (r[i] - m.mean[i]) * (r[j] - m.mean[j]);
        for (double& v : m.cov) v /= static_cast<double>(rows.size() - 1);
    }
    return m;
}

} // namespace

std::pair<double, double> ggd_fit(const std::vector<double>& x) {
    if (x.empty()) throw RangeError("ggd_fit: empty sample");
    double e_sq = 0, e_abs = 0;
    for (double v : x) {
        e_sq += v * v;
        e_abs += std::abs(v);
    }
    e_sq /= static_cast<double>(x.size());
    e_abs /= static_cast<double>(x.size());
    if (e_abs < 1e-12) return {2.0, e_sq}; // degenerate all-zero sample
    const double rho = e_sq / (e_abs * e_abs);

    const AlphaGrid& g = grid();
    size_t best = 0;
    double bd = std::abs(g.ggd_ratio[0] - rho);
    for (size_t i = 1; i < g.alpha.size(); ++i) {
        const double d = std::abs(g.ggd_ratio[i] - rho);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return {g.alpha[best], e_sq};
}

AggdFit aggd_fit(const std::vector<double>& x) {
    if (x.empty()) throw RangeError("aggd_fit: empty sample");
    double left_sq = 0, right_sq = 0, e_abs = 0, e_sq = 0;
    int64_t nl = 0, nr = 0;
    for (double v : x) {
        if (v < 0) {
            left_sq += v * v;
            ++nl;
        } else if (v > 0) {
            right_sq += v * v;
            ++nr;
        }
        e_abs += std::abs(v);
        e_sq += v * v;
    }
    const double sigma_l = nl ? std::sqrt(left_sq / static_cast<double>(nl)) : 1e-6;
    const double sigma_r = nr ? std::sqrt(right_sq / static_cast<double>(nr)) : 1e-6;
    e_abs /= static_cast<double>(x.size());
    e_sq /= static_cast<double>(x.size());

    AggdFit f;
    if (e_sq < 1e-12) {
        f.alpha = 2.0;
        return f;
    }
    const double gamma_hat = sigma_l / sigma_r;
    const double r_hat = (e_abs * e_abs) / e_sq;
    const double r_norm = r_hat * (gamma_hat * gamma_hat * gamma_hat + 1.0) * (gamma_hat + 1.0) /
                          std::pow(gamma_hat * gamma_hat + 1.0, 2.0);

    const AlphaGrid& g = grid();
    size_t best = 0;
    double bd = std::abs(g.aggd_ratio[0] - r_norm);
    for (size_t i = 1; i < g.alpha.size(); ++i) {
        const double d = std::abs(g.aggd_ratio[i] - r_norm);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    f.alpha = g.alpha[best];
    f.sigma_l_sq = sigma_l * sigma_l;
    f.sigma_r_sq = sigma_r * sigma_r;
    f.mean = (sigma_r - sigma_l) * std::tgamma(2.0 / f.alpha) / std::tgamma(1.0 / f.alpha);
    return f;
}

std::vector<double> niqe_features(const Image& img, int patch_size, bool sharpness_filter,
                                  double sharpness_fraction, std::vector<std::vector<double>>* per_patch) {
    if (img.h < patch_size || img.w < patch_size)
        throw RangeError("niqe: image smaller than the patch size");

    const FloatMap lum = luminance255(img);
    const MscnField s1 = mscn_field(lum);
    const MscnField s2 = mscn_field(downsample2(lum));

    const int64_t py = img.h / patch_size, px = img.w / patch_size;
    std::vector<std::vector<double>> rows;
    std::vector<double> sharpness;
    for (int64_t by = 0; by < py; ++by)
        for (int64_t bx = 0; bx < px; ++bx) {
            std::vector<double> feat;
            feat.reserve(36);
            patch_features(s1.mscn, by * patch_size, bx * patch_size, patch_size, feat);
            patch_features(s2.mscn, by * patch_size / 2, bx * patch_size / 2, patch_size / 2, feat);
            rows.push_back(std::move(feat));

            double sh = 0;
            for (int64_t y = by * patch_size; y < (by + 1) * patch_size; ++y)
                for (int64_t x = bx * patch_size; x < (bx + 1) * patch_size; ++x)
                    sh += s1.sigma.at(y, x);
            sharpness.push_back(sh / static_cast<double>(patch_size * patch_size));
        }

    if (sharpness_filter && !rows.empty()) {
        const double peak = *std::max_element(sharpness.begin(), sharpness.end());
        std::vector<std::vector<double>> kept;
        for (size_t i = 0; i < rows.size(); ++i)
            if (sharpness[i] >= sharpness_fraction * peak) kept.push_back(rows[i]);
        if (!kept.empty()) rows.swap(kept);
    }

    Moments m = feature_moments(rows);
    if (per_patch) *per_patch = std::move(rows);
    return m.mean;
}

NiqeModel niqe_fit(const std::vector<Image>& corpus, const NiqeConfig& cfg) {
    if (corpus.size() < 10) throw RangeError("niqe_fit: need at least 10 corpus images");
    std::vector<std::vector<double>> rows;
    for (const Image& img : corpus) {
        std::vector<std::vector<double>> patches;
        niqe_features(img, cfg.patch_size, true, cfg.sharpness_fraction, &patches);
        for (auto& p : patches) rows.push_back(std::move(p));
    }
    const Moments m = feature_moments(rows);

    NiqeModel model;
    model.patch_size = cfg.patch_size;
    model.mean = m.mean;
    model.covariance = m.cov;

    // probe invertibility once so degenerate corpora are flagged at fit time
    std::vector<double> dummy;
    bool used = false;
    if (!invert_with_ridge(model.covariance, static_cast<int>(model.mean.size()), cfg.ridge, dummy, &used))
        throw NumericError("niqe_fit: covariance not invertible even after regularization");
    model.regularized = used;
    return model;
}

double niqe_score(const Image& img, const NiqeModel& model) {
    std::vector<std::vector<double>> patches;
    niqe_features(img, model.patch_size, false, 0.0, &patches);
    const Moments m = feature_moments(patches);
    const int n = static_cast<int>(model.mean.size());

    std::vector<double> pooled(static_cast<size_t>(n) * n);
    for (int i = 0; i < n * n; ++i)
        pooled[static_cast<size_t>(i)] = 0.5 * (model.covariance[static_cast<size_t>(i)] +
                                                m.cov[static_cast<size_t>(i)]);
    std::vector<double> inv;
    if (!invert_with_ridge(pooled, n, 1e-6, inv, nullptr))
        throw NumericError("niqe_score: pooled covariance not invertible");

    std::vector<double> d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] = model.mean[static_cast<size_t>(i)] - m.mean[static_cast<size_t>(i)];
    double q = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            q += d[static_cast<size_t>(i)] * inv[static_cast<size_t>(i) * n + j] * d[static_cast<size_t>(j)];
    return std::sqrt(std::max(0.0, q));
}

void niqe_save(const NiqeModel& model, const std::string& path) {
    const uint32_t n = static_cast<uint32_t>(model.mean.size());
    std::vector<NamedTensor> tensors(3);
    tensors[0].name = "niqe.meta";
    tensors[0].dims = {2};
    tensors[0].data = {static_cast<float>(model.patch_size), model.regularized ? 1.0f : 0.0f};
    tensors[1].name = "niqe.mean";
    tensors[1].dims = {n};
    tensors[1].data.assign(model.mean.begin(), model.mean.end());
    tensors[2].name = "niqe.cov";
    tensors[2].dims = {n, n};
    tensors[2].data.assign(model.covariance.begin(), model.covariance.end());
    save_tensors(path, tensors);
}

NiqeModel niqe_load(const std::string& path) {
    const std::vector<NamedTensor> tensors = load_tensors(path);
    if (tensors.size() != 3 || tensors[0].name != "niqe.meta" || tensors[1].name != "niqe.mean" ||
        tensors[2].name != "niqe.cov")
        throw IoError("not a niqe model file: " + path);
    NiqeModel model;
    model.patch_size = static_cast<int>(tensors[0].data.at(0));
    model.regularized = tensors[0].data.at(1) != 0.0f;
    model.mean.assign(tensors[1].data.begin(), tensors[1].data.end());
    model.covariance.assign(tensors[2].data.begin(), tensors[2].data.end());
    if (model.mean.size() * model.mean.size() != model.covariance.size())
        throw IoError("corrupt niqe model: " + path);
    return model;
}

} // namespace mcaf
