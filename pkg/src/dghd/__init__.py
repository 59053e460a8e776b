"""Two-network comparison with the Generalised Hamming Distance."""
