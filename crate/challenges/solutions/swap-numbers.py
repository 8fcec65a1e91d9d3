a = int(input())
b = int(input())
temp = a
a = b
b = temp
print(a, b)
