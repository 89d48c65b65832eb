#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace cbf::detail {

// Cached c2c plans per grid size. FFTW_ESTIMATE keeps planning deterministic;
// FFTW_UNALIGNED lets us run the new-array execute API on ordinary vectors.
class FftPlans {
  public:
    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    void forward(int n, std::complex<double>* data) { execute(n, data, true); }
    void backward(int n, std::complex<double>* data) { execute(n, data, false); }

  private:
    struct Pair {
        fftw_plan fwd = nullptr;
        fftw_plan bwd = nullptr;
    };

    FftPlans() = default;
    ~FftPlans() {
        for (auto& [n, p] : plans_) {
            fftw_destroy_plan(p.fwd);
            fftw_destroy_plan(p.bwd);
        }
    }
    FftPlans(const FftPlans&) = delete;

    void execute(int n, std::complex<double>* data, bool fwd) {
        const Pair& p = get(n);
        auto* ptr = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(fwd ? p.fwd : p.bwd, ptr, ptr);
    }

    const Pair& get(int n) {
        std::scoped_lock lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> buf(static_cast<size_t>(n) * n);
        auto* ptr = reinterpret_cast<fftw_complex*>(buf.data());
        Pair p;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        p.fwd = fftw_plan_dft_2d(n, n, ptr, ptr, FFTW_FORWARD, flags);
        p.bwd = fftw_plan_dft_2d(n, n, ptr, ptr, FFTW_BACKWARD, flags);
        return plans_.emplace(n, p).first->second;
    }

    std::mutex mutex_;
    std::map<int, Pair> plans_;
};

// In-place unnormalized DFTs; series-coefficient scaling handled by callers.
inline void fft_forward(int n, std::complex<double>* data) {
    FftPlans::instance().forward(n, data);
}
inline void fft_backward(int n, std::complex<double>* data) {
    FftPlans::instance().backward(n, data);
}

} // namespace cbf::detail
