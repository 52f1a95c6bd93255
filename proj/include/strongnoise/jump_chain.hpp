#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "strongnoise/errors.hpp"

namespace strongnoise {

/// Cadlag {0,1}-valued path on [0, horizon]: starts in `initial_state` and
/// flips at each entry of `jump_times`. `states[i]` is the state entered at
/// `jump_times[i]`.
struct JumpChain {
    int initial_state = 0;
    std::vector<double> jump_times;
    std::vector<int> states;
    double horizon = 0.0;

    void validate() const {
        if (initial_state != 0 && initial_state != 1) throw InvalidArgument("JumpChain: initial state must be 0 or 1");
        if (jump_times.size() != states.size()) throw InvalidArgument("JumpChain: jump_times/states length mismatch");
        int prev = initial_state;
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i] != 1 - prev) throw InvalidArgument("JumpChain: states must alternate");
            if (jump_times[i] < 0.0 || (i > 0 && !(jump_times[i] > jump_times[i - 1])))
                throw InvalidArgument("JumpChain: jump times must be strictly increasing");
            prev = states[i];
        }
        if (!jump_times.empty() && jump_times.back() > horizon)
            throw InvalidArgument("JumpChain: jump after horizon");
    }

    int state_at(double t) const {
        const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
        if (it == jump_times.begin()) return initial_state;
        return states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
    }

    /// Epoch i spans [start(i), end(i)) in state `epoch_state(i)`; there are
    /// jump_times.size() + 1 epochs, the last one censored at the horizon.
    std::size_t epoch_count() const noexcept { return jump_times.size() + 1; }
    double epoch_start(std::size_t i) const { return i == 0 ? 0.0 : jump_times[i - 1]; }
    double epoch_end(std::size_t i) const { return i < jump_times.size() ? jump_times[i] : horizon; }
    int epoch_state(std::size_t i) const { return i == 0 ? initial_state : states[i - 1]; }

    /// Completed holding times in `state` (the censored last epoch is dropped).
    std::vector<double> holding_times(int state) const {
        std::vector<double> out;
        for (std::size_t i = 0; i + 1 < epoch_count(); ++i)
            if (epoch_state(i) == state) out.push_back(epoch_end(i) - epoch_start(i));
        return out;
    }

    double time_in_state(int state) const {
        double total = 0.0;
        for (std::size_t i = 0; i < epoch_count(); ++i)
            if (epoch_state(i) == state) total += epoch_end(i) - epoch_start(i);
        return total;
    }
};

}  // namespace strongnoise
