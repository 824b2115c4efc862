"""Interface en ligne de commande de la chaîne LiDAR"""
