#include "uqaudit/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace uqaudit::kernels {
namespace {

struct Selection {
    const Ops* ops;
    std::string_view name;
};

Selection select() {
    const char* forced = std::getenv("UQAUDIT_SIMD");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
        return {&scalar_ops(), "scalar"};
    }
    if (const Ops* avx2 = avx2_ops()) return {avx2, "avx2"};
    return {&scalar_ops(), "scalar"};
}

const Selection& selection() {
    static const Selection s = select();
    return s;
}

}  // namespace

const Ops& active() { return *selection().ops; }

std::string_view backend_name() { return selection().name; }

}  // namespace uqaudit::kernels
