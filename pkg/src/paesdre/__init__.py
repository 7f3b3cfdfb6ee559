"""Polytopic-autoencoder LPV approximation and SDRE series feedback."""
