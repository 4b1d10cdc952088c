#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <string>
#include <vector>

#include "heatring/error.hpp"
#include "heatring/stack.hpp"

namespace testing_support {

using namespace heatring;

// Monthly stack over `months` months from `first`, value f(t, cell).
inline RasterStack monthly_stack(const GridSpec& spec, Month first, int months,
                                 const std::function<double(int, std::size_t)>& f) {
    RasterStack st;
    st.spec = spec;
    for (int t = 0; t < months; ++t) {
        st.timeline.push_back((first + t).label());
        std::vector<double> layer(spec.cell_count());
        for (std::size_t c = 0; c < layer.size(); ++c) layer[c] = f(t, c);
        st.layers.push_back(std::move(layer));
    }
    return st;
}

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no heatring::Error thrown";
    return ErrorCode::index;
}

} // namespace testing_support
