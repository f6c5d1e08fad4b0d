"""Layer objects composing the functional ops into a trainable stack."""

import numpy as np

from . import ops


class Layer:
    """Stateless base; layers with parameters override params/grads."""

    def params(self):
        return []

    def grads(self):
        return []

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


class Conv2d(Layer):
    def __init__(self, weight, bias):
        self.w = weight
        self.b = bias
        self.gw = None
        self.gb = None
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return ops.conv2d_forward(x, self.w, self.b)

    def backward(self, grad_out):
        gx, self.gw, self.gb = ops.conv2d_backward(self._x, self.w, grad_out)
        return gx


class Dense(Layer):
    def __init__(self, weight, bias):
        self.w = weight
        self.b = bias
        self.gw = None
        self.gb = None
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return ops.dense_forward(x, self.w, self.b)

    def backward(self, grad_out):
        gx, self.gw, self.gb = ops.dense_backward(self._x, self.w, grad_out)
        return gx


class ReLU(Layer):
    def forward(self, x):
        self._x = x
        return ops.relu(x)

    def backward(self, grad_out):
        return ops.relu_backward(self._x, grad_out)


class Sigmoid(Layer):
    def forward(self, x):
        self._out = ops.sigmoid(x)
        return self._out

    def backward(self, grad_out):
        return ops.sigmoid_backward(self._out, grad_out)


class MaxPool2d(Layer):
    def forward(self, x):
        self._x = x
        out, self._idx = ops.maxpool2d_forward(x)
        return out

    def backward(self, grad_out):
        return ops.maxpool2d_backward(self._x, self._idx, grad_out)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        if x.ndim == 4:
            return x.reshape(x.shape[0], -1)
        return x.reshape(-1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class Network(Layer):
    """Sequential container with flat parameter/gradient views."""

    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def astype(self, dtype):
        """Cast all parameters in place (e.g. to float64 for checking)."""
        for layer in self.layers:
            if isinstance(layer, (Conv2d, Dense)):
                layer.w = layer.w.astype(dtype)
                layer.b = layer.b.astype(dtype)
        return self
