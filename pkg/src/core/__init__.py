# Channel model modules
