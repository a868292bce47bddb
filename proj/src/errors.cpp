#include "emcee/errors.hpp"

namespace emcee {

const char* to_string(ConditionClass c) {
    switch (c) {
        case ConditionClass::timeout: return "timeout";
        case ConditionClass::rate_limited: return "rate_limited";
        case ConditionClass::server_error: return "server_error";
        case ConditionClass::other: return "other";
    }
    return "other";
}

}  // namespace emcee
