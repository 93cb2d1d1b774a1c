#pragma once

#include "ctxcert/tensor.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ctxcert {

// Contextual perturbations g(X, eps): each maps an image in [0,1] and a level eps in [0,1]
// to a perturbed image in [0,1]. eps = 0 is always the unmodified image.

enum class PerturbationKind { haze, contrast, blur };

std::string_view to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(std::string_view name);

using HazeColor = std::array<float, 3>;

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::haze;
    HazeColor haze_color{1.0f, 1.0f, 1.0f};
    std::size_t kernel_half_width = 2;
    double sigma_max = 2.0;

    static PerturbationSpec haze(HazeColor color = {1.0f, 1.0f, 1.0f});
    static PerturbationSpec contrast();
    static PerturbationSpec blur(std::size_t kernel_half_width = 2, double sigma_max = 2.0);

    // Throws RangeError if a parameter is outside its domain.
    void validate() const;
    std::string describe() const;
};

// (2k+1) x (2k+1) discretised Gaussian, row-major with offsets -k..k.
struct KernelWeights {
    std::size_t half_width = 0;
    std::vector<double> weights;

    std::size_t width() const { return 2 * half_width + 1; }
    double at(std::ptrdiff_t dy, std::ptrdiff_t dx) const
    {
        const auto k = static_cast<std::ptrdiff_t>(half_width);
        return weights[static_cast<std::size_t>((dy + k) * static_cast<std::ptrdiff_t>(width()) + (dx + k))];
    }
};

// Channel c of the image is blended toward haze_color[c % 3]; a single-channel image therefore
// uses the first component.
float haze_component(const HazeColor &color, std::size_t channel);

Tensor apply_haze(const Tensor &image, double eps, const HazeColor &haze_color);

// (x - eps/2) / (1 - eps) clamped to [0,1]; eps = 1 is the hard threshold at 0.5.
Tensor apply_contrast(const Tensor &image, double eps);

// sigma = eps * sigma_max; sigma below 1e-6 yields the delta kernel.
KernelWeights gaussian_kernel(double eps, std::size_t kernel_half_width, double sigma_max);

// Per-channel convolution with replicate (clamp-to-edge) borders.
Tensor apply_blur(const Tensor &image, double eps, std::size_t kernel_half_width, double sigma_max);

Tensor perturb(const PerturbationSpec &spec, const Tensor &image, double eps);

} // namespace ctxcert
