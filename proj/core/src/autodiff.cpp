#include "sevkit/autodiff.hpp"

#include "sevkit/modules.hpp"
#include "sevkit/ops.hpp"

namespace sevkit {

template <typename T>
typename TapeT<T>::NodeId tape_conv2d(TapeT<T>& tape, typename TapeT<T>::NodeId x,
                                      const ConvKernelT<T>& kernel, TensorT<T>* weight_grad,
                                      std::size_t stride, std::size_t padding) {
    TensorT<T> y = conv2d(tape.value(x), kernel, stride, padding);
    return tape.push(std::move(y), [x, &kernel, weight_grad, stride, padding](
                                       TapeT<T>& t, typename TapeT<T>::NodeId self) {
        TensorT<T> gx;
        conv2d_backward(t.value(x), kernel, stride, padding, t.grad(self), &gx, weight_grad);
        t.grad(x) += gx;
    });
}

template <typename T>
typename TapeT<T>::NodeId tape_relu(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = relu(tape.value(x));
    return tape.push(std::move(y), [x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        t.grad(x) += relu_backward(t.value(x), t.grad(self));
    });
}

template <typename T>
typename TapeT<T>::NodeId tape_elu(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = elu(tape.value(x));
    return tape.push(std::move(y), [x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        t.grad(x) += elu_backward(t.value(x), t.grad(self));
    });
}

template <typename T>
typename TapeT<T>::NodeId tape_gelu(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = gelu(tape.value(x));
    return tape.push(std::move(y), [x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        t.grad(x) += gelu_backward(t.value(x), t.grad(self));
    });
}

#define SEVKIT_INSTANTIATE_TAPE_OPS(T)                                                         \
    template TapeT<T>::NodeId tape_conv2d<T>(TapeT<T>&, TapeT<T>::NodeId, const ConvKernelT<T>&, \
                                             TensorT<T>*, std::size_t, std::size_t);           \
    template TapeT<T>::NodeId tape_relu<T>(TapeT<T>&, TapeT<T>::NodeId);                       \
    template TapeT<T>::NodeId tape_elu<T>(TapeT<T>&, TapeT<T>::NodeId);                        \
    template TapeT<T>::NodeId tape_gelu<T>(TapeT<T>&, TapeT<T>::NodeId);

SEVKIT_INSTANTIATE_TAPE_OPS(float)
SEVKIT_INSTANTIATE_TAPE_OPS(double)

#undef SEVKIT_INSTANTIATE_TAPE_OPS

}  // namespace sevkit
