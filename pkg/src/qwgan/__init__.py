"""Hybrid quantum-classical generative engine: a quantum-circuit Born
machine serving latent vectors to a Wasserstein GAN with gradient penalty,
with trapped-ion native-gate transpilation and MMD evaluation."""

__version__ = "0.1.0"
