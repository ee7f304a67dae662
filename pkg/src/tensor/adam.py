import numpy as np

DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8


def adam_step(store, moments, lr, betas=DEFAULT_BETAS, eps=DEFAULT_EPS, step=1):
    """One bias-corrected Adam update over every parameter, then zero the grads.

    moments maps parameter name -> (first, second) moment arrays and is
    updated in place.
    """
    beta1, beta2 = betas
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step
    for param in store:
        first, second = moments.get(param.name, (np.zeros_like(param.values), np.zeros_like(param.values)))
        grad = param.grad
        first = beta1 * first + (1.0 - beta1) * grad
        second = beta2 * second + (1.0 - beta2) * grad * grad
        moments[param.name] = (first, second)
        param.values -= lr * (first / correction1) / (np.sqrt(second / correction2) + eps)
        param.zero_grad()


class Adam:
    def __init__(self, store, lr=1e-4, betas=DEFAULT_BETAS, eps=DEFAULT_EPS):
        self.store = store
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self.moments = {}

    def step(self):
        self.step_count += 1
        adam_step(self.store, self.moments, self.lr, self.betas, self.eps, self.step_count)
