#include "evoembed/parallel.hpp"

#include <cstdlib>
#include <string>

namespace evoembed {

int default_thread_count() {
    if (const char* env = std::getenv("EVOEMBED_THREADS")) {
        try {
            int value = std::stoi(env);
            if (value >= 1) {
                return value;
            }
        } catch (const std::exception&) {
            // fall through to hardware concurrency
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace evoembed
