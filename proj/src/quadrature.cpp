#include "insitu/quadrature.hpp"

namespace insitu {

template QuadratureRule<double> gauss_legendre<double>(int);
template QuadratureRule<long double> gauss_legendre<long double>(int);

}  // namespace insitu
