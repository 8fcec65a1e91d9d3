password = input()
attempts = 1
while password != "swordfish" and attempts < 3:
    password = input()
    attempts = attempts + 1
if password == "swordfish":
    print("Access granted")
else:
    print("Access denied")
