#include "ctxcert/error.hpp"

namespace ctxcert {

void throw_range(const std::string &what)
{
    throw RangeError(what);
}

} // namespace ctxcert
