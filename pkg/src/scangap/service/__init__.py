"""HTTP service exposing metric evaluation, perturbation and the self-test."""
