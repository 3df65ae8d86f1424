#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>

namespace mxbolo::detail {
namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> allocate(std::size_t n) {
    return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1))));
}

class Plan {
public:
    explicit Plan(fftw_plan p) : plan_(p) {}
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const std::size_t n = x.size();
    auto in = allocate<double>(n);
    auto out = allocate<fftw_complex>(n / 2 + 1);
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    Plan plan(raw);
    std::copy(x.begin(), x.end(), in.get());
    plan.execute();
    std::vector<std::complex<double>> bins(n / 2 + 1);
    std::memcpy(static_cast<void*>(bins.data()), out.get(), sizeof(fftw_complex) * bins.size());
    return bins;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n) {
    auto in = allocate<fftw_complex>(n / 2 + 1);
    auto out = allocate<double>(n);
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    }
    Plan plan(raw);
    std::memcpy(in.get(), bins.data(), sizeof(fftw_complex) * (n / 2 + 1));
    plan.execute();
    std::vector<double> y(out.get(), out.get() + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : y) {
        v *= scale;
    }
    return y;
}

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x, bool inverse) {
    const std::size_t n = x.size();
    auto in = allocate<fftw_complex>(n);
    auto out = allocate<fftw_complex>(n);
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                               FFTW_ESTIMATE);
    }
    Plan plan(raw);
    std::memcpy(in.get(), x.data(), sizeof(fftw_complex) * n);
    plan.execute();
    std::vector<std::complex<double>> y(n);
    std::memcpy(static_cast<void*>(y.data()), out.get(), sizeof(fftw_complex) * n);
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : y) {
            v *= scale;
        }
    }
    return y;
}

}  // namespace mxbolo::detail
