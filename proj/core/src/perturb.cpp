#include "ctxcert/perturb.hpp"

#include "ctxcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ctxcert {

namespace {

constexpr double kDeltaSigma = 1e-6;

void check_eps(double eps, const char *op)
{
    if (!(eps >= 0.0 && eps <= 1.0))
        throw_range(std::string(op) + ": eps " + std::to_string(eps) + " outside [0, 1]");
}

void check_image(const Tensor &image, const char *op)
{
    if (image.rank() != 3)
        throw ShapeError(std::string(op) + ": image must be H x W x C, got " + shape_to_string(image.shape()));
}

} // namespace

std::string_view to_string(PerturbationKind kind)
{
    switch (kind) {
    case PerturbationKind::haze:
        return "haze";
    case PerturbationKind::contrast:
        return "contrast";
    case PerturbationKind::blur:
        return "blur";
    }
    return "?";
}

PerturbationKind perturbation_kind_from_string(std::string_view name)
{
    if (name == "haze")
        return PerturbationKind::haze;
    if (name == "contrast")
        return PerturbationKind::contrast;
    if (name == "blur")
        return PerturbationKind::blur;
    throw RangeError("unknown perturbation '" + std::string(name) + "' (expected haze, contrast or blur)");
}

PerturbationSpec PerturbationSpec::haze(HazeColor color)
{
    PerturbationSpec spec;
    spec.kind = PerturbationKind::haze;
    spec.haze_color = color;
    return spec;
}

PerturbationSpec PerturbationSpec::contrast()
{
    PerturbationSpec spec;
    spec.kind = PerturbationKind::contrast;
    return spec;
}

PerturbationSpec PerturbationSpec::blur(std::size_t kernel_half_width, double sigma_max)
{
    PerturbationSpec spec;
    spec.kind = PerturbationKind::blur;
    spec.kernel_half_width = kernel_half_width;
    spec.sigma_max = sigma_max;
    return spec;
}

void PerturbationSpec::validate() const
{
    for (float c : haze_color)
        if (!(c >= 0.0f && c <= 1.0f))
            throw_range("haze colour components must lie in [0, 1]");
    if (kernel_half_width < 1)
        throw_range("blur kernel half-width must be >= 1");
    if (!(sigma_max > 0.0) || !std::isfinite(sigma_max))
        throw_range("blur sigma_max must be positive");
}

std::string PerturbationSpec::describe() const
{
    std::ostringstream out;
    out << to_string(kind);
    switch (kind) {
    case PerturbationKind::haze:
        out << "(colour=" << haze_color[0] << "," << haze_color[1] << "," << haze_color[2] << ")";
        break;
    case PerturbationKind::blur:
        out << "(kd=" << kernel_half_width << ",sigma_max=" << sigma_max << ")";
        break;
    case PerturbationKind::contrast:
        break;
    }
    return out.str();
}

float haze_component(const HazeColor &color, std::size_t channel)
{
    return color[channel % color.size()];
}

Tensor apply_haze(const Tensor &image, double eps, const HazeColor &haze_color)
{
    check_eps(eps, "apply_haze");
    check_image(image, "apply_haze");
    Tensor out(image.shape());
    const std::size_t channels = image.dim(2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double fog = haze_component(haze_color, i % channels);
        out[i] = static_cast<float>((1.0 - eps) * image[i] + eps * fog);
    }
    return out;
}

Tensor apply_contrast(const Tensor &image, double eps)
{
    check_eps(eps, "apply_contrast");
    check_image(image, "apply_contrast");
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double x = image[i];
        double y;
        if (eps == 1.0)
            y = x < 0.5 ? 0.0 : (x > 0.5 ? 1.0 : 0.5);
        else
            y = std::max(0.0, std::min(1.0, (x - 0.5 * eps) / (1.0 - eps)));
        out[i] = static_cast<float>(y);
    }
    return out;
}

KernelWeights gaussian_kernel(double eps, std::size_t kernel_half_width, double sigma_max)
{
    check_eps(eps, "gaussian_kernel");
    if (kernel_half_width < 1)
        throw_range("gaussian_kernel: half-width must be >= 1");
    if (!(sigma_max > 0.0))
        throw_range("gaussian_kernel: sigma_max must be positive");

    KernelWeights kernel;
    kernel.half_width = kernel_half_width;
    const std::size_t width = kernel.width();
    kernel.weights.assign(width * width, 0.0);

    const double sigma = eps * sigma_max;
    if (sigma < kDeltaSigma) {
        kernel.weights[kernel_half_width * width + kernel_half_width] = 1.0;
        return kernel;
    }

    const auto k = static_cast<std::ptrdiff_t>(kernel_half_width);
    double total = 0.0;
    for (std::ptrdiff_t dy = -k; dy <= k; ++dy) {
        for (std::ptrdiff_t dx = -k; dx <= k; ++dx) {
            const double w = std::exp(-static_cast<double>(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            kernel.weights[static_cast<std::size_t>((dy + k) * static_cast<std::ptrdiff_t>(width) + (dx + k))] = w;
            total += w;
        }
    }
    for (double &w : kernel.weights)
        w /= total;
    return kernel;
}

Tensor apply_blur(const Tensor &image, double eps, std::size_t kernel_half_width, double sigma_max)
{
    check_image(image, "apply_blur");
    const KernelWeights kernel = gaussian_kernel(eps, kernel_half_width, sigma_max);

    const auto h = static_cast<std::ptrdiff_t>(image.dim(0));
    const auto w = static_cast<std::ptrdiff_t>(image.dim(1));
    const std::size_t channels = image.dim(2);
    const auto k = static_cast<std::ptrdiff_t>(kernel_half_width);

    Tensor out(image.shape());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t dy = -k; dy <= k; ++dy) {
                    const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1));
                    for (std::ptrdiff_t dx = -k; dx <= k; ++dx) {
                        const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1));
                        acc += kernel.at(dy, dx) * image.at(sy, sx, c);
                    }
                }
                out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Tensor perturb(const PerturbationSpec &spec, const Tensor &image, double eps)
{
    spec.validate();
    switch (spec.kind) {
    case PerturbationKind::haze:
        return apply_haze(image, eps, spec.haze_color);
    case PerturbationKind::contrast:
        return apply_contrast(image, eps);
    case PerturbationKind::blur:
        return apply_blur(image, eps, spec.kernel_half_width, spec.sigma_max);
    }
    throw RangeError("unknown perturbation kind");
}

} // namespace ctxcert
