#include "foct/kernels.hpp"

namespace foct::kernels {

bool& parallel_flag() {
    static bool flag = true;
    return flag;
}

}  // namespace foct::kernels
